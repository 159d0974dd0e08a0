from django.urls import path
from . import views

urlpatterns = [
    path('api/check/', views.check_spec, name='check_spec'),
    path('api/graph/', views.message_graph, name='message_graph'),
    path('api/validate/', views.validate_message, name='validate_message'),
]
